fn main() {
    std::process::exit(tlp_core::cli::run(std::env::args_os()));
}
