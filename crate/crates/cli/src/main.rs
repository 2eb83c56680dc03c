fn main() {
    std::process::exit(shapestat_cli::cli_dispatch(std::env::args_os()));
}
