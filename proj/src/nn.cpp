#include "mcnet/nn.hpp"

namespace mcnet {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu:
            return "relu";
        case Activation::sigmoid:
            return "sigmoid";
        case Activation::identity:
            return "identity";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw Error("unknown activation '" + std::string(name) + "'");
}

template class DenseNet<double>;

} // namespace mcnet
