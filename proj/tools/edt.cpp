#include <cstdio>

int main() {
    std::puts("edt: placeholder");
    return 0;
}
