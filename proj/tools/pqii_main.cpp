#include "pqii/cli.hpp"

int main(int argc, char** argv) {
    return pqii::cli::run(argc, argv);
}
