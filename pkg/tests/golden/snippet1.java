int x = 1; // note

for (int i=0;i<2;i++) { f.run(); }
