fn main() {
    std::process::exit(carenet_cli::run(std::env::args_os()));
}
