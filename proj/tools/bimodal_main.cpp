#include <cstdio>

int main() {
    std::puts("bimodal: CLI under construction");
    return 0;
}
