#include <pybind11/pybind11.h>

namespace py = pybind11;

PYBIND11_MODULE(_zskd, m) {
  m.doc() = "zero-shot distillation core (bindings under construction)";
}
