#include "mmc/diagram.hpp"
