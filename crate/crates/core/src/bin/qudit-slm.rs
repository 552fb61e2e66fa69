fn main() {
    std::process::exit(qudit_slm::harness::cli::run(std::env::args_os()));
}
