fn main() {
    std::process::exit(conformal_energy::cli::main_with_args(std::env::args_os()));
}
