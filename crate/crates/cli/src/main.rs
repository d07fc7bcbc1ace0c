fn main() {
    std::process::exit(gausshardy_cli::run(std::env::args_os()));
}
