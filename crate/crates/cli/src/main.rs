fn main() {
    std::process::exit(ea_refine_cli::run(std::env::args_os()));
}
