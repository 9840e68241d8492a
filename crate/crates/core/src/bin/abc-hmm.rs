fn main() {
    std::process::exit(abc_hmm::cli::run_cli(std::env::args_os()));
}
