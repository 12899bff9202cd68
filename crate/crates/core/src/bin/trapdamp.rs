fn main() {
    std::process::exit(trapdamp::cli::run(std::env::args_os()));
}
