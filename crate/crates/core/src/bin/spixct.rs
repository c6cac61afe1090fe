fn main() {
    env_logger::init();
    std::process::exit(spixct::cli::run(std::env::args_os()));
}
