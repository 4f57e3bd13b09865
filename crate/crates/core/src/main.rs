fn main() {
    std::process::exit(dglab::cli::run(std::env::args_os()));
}
