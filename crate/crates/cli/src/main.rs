fn main() {
    std::process::exit(rangelab_cli::run(std::env::args_os()));
}
