#include "dialogkit/cli/app.hpp"

int main(int argc, char** argv) { return dialogkit::cli::dispatch(argc, argv); }
