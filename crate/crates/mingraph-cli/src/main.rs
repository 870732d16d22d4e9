fn main() {
    std::process::exit(mingraph_cli::run(std::env::args_os()));
}
