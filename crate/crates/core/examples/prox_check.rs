//! Checks every closed-form prox against the brute-force minimizer.

use vrtos::oracle::{check_prox, ProxKind};

fn main() {
    for kind in [ProxKind::L1, ProxKind::GroupLasso, ProxKind::Fused, ProxKind::Consensus] {
        let r = check_prox(kind, 500, 0);
        println!("{kind:>12}: max deviation {:.2e} over {} trials", r.max_deviation, r.trials);
    }
}
