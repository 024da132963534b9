#include <picn/app.hpp>

int main(int argc, char** argv) { return picn::app::run_cli(argc, argv); }
