fn main() {
    bibifi::securelog_main("logread", bibifi_securelog::Variant::Oracle, &bibifi::args())
}
