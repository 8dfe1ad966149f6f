fn main() {
    std::process::exit(plasticity::cli::run(std::env::args_os()));
}
