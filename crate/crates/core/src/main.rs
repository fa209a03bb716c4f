fn main() {
    std::process::exit(vertex_duality::cli::run(std::env::args_os()));
}
