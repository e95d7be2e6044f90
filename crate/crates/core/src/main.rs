fn main() {
    std::process::exit(sparse_mkr::cli::main_with_args(std::env::args_os()));
}
