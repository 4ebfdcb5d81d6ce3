fn main() {
    std::process::exit(bibifi::atm_main(bibifi_atm::Flavor::Oracle, &bibifi::args()))
}
