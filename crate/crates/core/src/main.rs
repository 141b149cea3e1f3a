fn main() {
    std::process::exit(cellbandit::cli::run_cli(std::env::args_os()));
}
