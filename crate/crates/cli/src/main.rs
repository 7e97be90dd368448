fn main() {
    std::process::exit(homog_cli::run(std::env::args_os()));
}
