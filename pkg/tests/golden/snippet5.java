import static java.lang.Math.max;
// header comment
   	
@interface Marker {}
String q = "say \"hi\" @Deprecated";
int[] arr = {1, 2};
obj.first().second(arr.length);