fn main() {
    std::process::exit(sparsepdo::cli::main_with(std::env::args()));
}
