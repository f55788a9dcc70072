fn main() {
    std::process::exit(phasecap::cli::run(std::env::args_os()));
}
