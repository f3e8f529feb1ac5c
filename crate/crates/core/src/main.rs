fn main() {
    std::process::exit(shgrav::cli::run(std::env::args_os()));
}
