fn main() {
    std::process::exit(gmmv::cli::run(std::env::args_os()));
}
