fn main() {
    std::process::exit(qnls::cli_io::run_command(std::env::args()));
}
