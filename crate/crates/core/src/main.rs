fn main() {
    std::process::exit(ladder_inversion::cli::run(std::env::args_os()));
}
