fn main() {
    std::process::exit(nnrepair::cli::run(std::env::args_os()));
}
