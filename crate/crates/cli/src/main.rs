fn main() {
    std::process::exit(psam_cli::run(std::env::args_os()));
}
