fn main() {
    std::process::exit(branchlab::cli::run(std::env::args_os()));
}
