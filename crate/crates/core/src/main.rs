fn main() {
    if let Err(e) = rydsim::cli::main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
