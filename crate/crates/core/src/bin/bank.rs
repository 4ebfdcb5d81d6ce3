fn main() {
    std::process::exit(bibifi::bank_main(bibifi_atm::Flavor::Oracle, &bibifi::args()))
}
