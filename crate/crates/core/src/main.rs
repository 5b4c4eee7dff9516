fn main() {
    std::process::exit(dma_nearfield::cli::main_with_args(std::env::args_os()));
}
