fn main() {
    std::process::exit(straddle::cli::run(std::env::args_os()));
}
