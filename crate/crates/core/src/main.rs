fn main() {
    std::process::exit(lipsol::cli::run(std::env::args_os()));
}
