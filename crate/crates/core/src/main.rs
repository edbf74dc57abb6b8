fn main() {
    std::process::exit(tvalpha::cli::run(std::env::args_os()));
}
