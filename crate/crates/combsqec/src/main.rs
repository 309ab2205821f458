fn main() {
    std::process::exit(combsqec::cli::run(std::env::args_os()));
}
