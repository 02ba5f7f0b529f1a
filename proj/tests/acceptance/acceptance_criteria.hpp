#pragma once

namespace acceptance {

bool criterion1();
bool criterion2();
bool criterion3();
bool criterion4();
bool criterion5();
bool criterion6();
bool criterion7();
bool criterion8();
bool criterion9();

}  // namespace acceptance
