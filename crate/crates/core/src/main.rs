fn main() {
    std::process::exit(nlhelm_core::cli::run(std::env::args_os()));
}
