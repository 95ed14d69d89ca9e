fn main() {
    std::process::exit(stationary::cli::run(std::env::args_os()));
}
