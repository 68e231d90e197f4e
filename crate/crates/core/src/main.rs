fn main() {
    std::process::exit(nsfde::cli::run_from_args(std::env::args_os()));
}
