fn main() {
    std::process::exit(panelrisk::cli::run(std::env::args_os()));
}
