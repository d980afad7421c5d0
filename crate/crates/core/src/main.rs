fn main() {
    std::process::exit(cwgan_core::cli::run(std::env::args_os()));
}
