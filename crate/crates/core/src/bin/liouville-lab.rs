fn main() {
    std::process::exit(singular_liouville::cli::run(std::env::args_os()));
}
