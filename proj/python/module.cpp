#include <pybind11/pybind11.h>
PYBIND11_MODULE(_cgkasim, m) { m.doc() = "placeholder"; }
