#include "magdirac/cli/commands.hpp"

int main(int argc, char** argv)
{
    return magdirac::cli::run(argc, argv);
}
