fn main() {
    std::process::exit(hilbert_ops_cli::run(std::env::args_os()));
}
