fn main() {
    std::process::exit(spde_lab_cli::run_cli(std::env::args().collect()));
}
