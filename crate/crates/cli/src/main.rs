fn main() {
    std::process::exit(trajscan_cli::run(std::env::args_os()));
}
