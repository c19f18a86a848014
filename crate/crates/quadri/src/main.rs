fn main() { std::process::exit(quadri::cli::run_main()); }
