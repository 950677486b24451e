fn main() {
    std::process::exit(dpac::cli::run(std::env::args_os()));
}
