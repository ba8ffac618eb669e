fn main() {
    std::process::exit(meld::cli::main(std::env::args_os()));
}
