fn main() {
    std::process::exit(engage::cli::run(std::env::args_os()));
}
