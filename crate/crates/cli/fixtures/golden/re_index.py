a = input().split()
print(a[7])
