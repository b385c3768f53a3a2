fn main() {
    std::process::exit(vrtos::cli::main_from(std::env::args_os()));
}
