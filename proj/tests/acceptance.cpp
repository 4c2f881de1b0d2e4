#include "genop/model/train.hpp"
#include "genop/model/checkpoint.hpp"
#include "genop/inv/invert.hpp"
int main(){return 0;}
