fn main() {
    std::process::exit(radonlab::cli::run(std::env::args_os()));
}
