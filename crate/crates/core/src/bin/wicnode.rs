fn main() {
    std::process::exit(wicnode::cli::run(std::env::args_os()));
}
