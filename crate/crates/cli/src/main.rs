fn main() {
    std::process::exit(posebox_cli::run(std::env::args_os()));
}
