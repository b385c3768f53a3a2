//! Generates a dataset, writes it in LIBSVM format, reads it back, and shows
//! how a malformed line is reported.

use vrtos::data::{generate_synthetic, parse_libsvm_str, read_libsvm_file, write_libsvm, Task};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_synthetic(50, 20, 0.2, Task::Logistic, 5)?;
    let path = std::env::temp_dir().join("vrtos_example.svm");
    write_libsvm(&data, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    let back = read_libsvm_file(&path, Some(20))?;
    println!(
        "{}: {} rows, {} nonzeros, identical = {}",
        path.display(),
        back.n_samples(),
        back.features.nnz(),
        back.features == data.features && back.labels == data.labels
    );
    std::fs::remove_file(&path)?;

    match parse_libsvm_str("1 1:0.5 3:2\n-1 2:1 2:4\n", None) {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("rejected at line {:?}: {e}", e.line()),
    }
    Ok(())
}
