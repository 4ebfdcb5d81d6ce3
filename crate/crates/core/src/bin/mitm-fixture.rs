fn main() {
    std::process::exit(bibifi::mitm_main(&bibifi::args()))
}
