fn main() {
    std::process::exit(vl_cli::run(std::env::args_os()));
}
