fn main() {
    std::process::exit(gatres_core::cli::run(std::env::args_os()));
}
